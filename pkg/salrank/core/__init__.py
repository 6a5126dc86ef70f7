"""Map types and pixel algebra."""
