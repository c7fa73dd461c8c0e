import sys

from semcom_figures.cli import main

sys.exit(main())
