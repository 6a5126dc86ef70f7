"""``python -m salrank``."""

from salrank.cli import main

if __name__ == "__main__":
    main()
