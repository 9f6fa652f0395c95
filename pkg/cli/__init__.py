"""Command-line front end for octrans."""
