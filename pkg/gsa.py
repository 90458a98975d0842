"""
Точка входа: python gsa.py <команда> ...
То же, что python -m gsattack.
"""
import sys

from gsattack.cli import main

if __name__ == "__main__":
    sys.exit(main())
