"""Main module for lie-entropy package.

This allows running the package directly with python -m lie_entropy
"""

from lie_entropy import main

if __name__ == "__main__":
    main()
