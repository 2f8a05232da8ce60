"""Entry point for ``python -m crowdcal``."""
from crowdcal.cli import main

if __name__ == "__main__":
    main(prog_name="crowdcal")
