"""Core module for octrans."""
