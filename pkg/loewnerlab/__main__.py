"""Entry point for `python -m loewnerlab`."""

from .cli import main

if __name__ == "__main__":
    main()
