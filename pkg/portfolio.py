import sys

from src.cli import main as portfolio_cli

if __name__ == "__main__":
    sys.exit(portfolio_cli())
