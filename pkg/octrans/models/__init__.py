"""Data models for octrans."""
