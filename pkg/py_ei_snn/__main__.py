import sys

from py_ei_snn.cli import main

if __name__ == "__main__":
    sys.exit(main())
