"""Result persistence for star-rz."""
