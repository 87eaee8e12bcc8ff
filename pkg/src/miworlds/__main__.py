"""Enable running miworlds as a module: python -m miworlds"""

from miworlds.cli import main

if __name__ == "__main__":
    main()
