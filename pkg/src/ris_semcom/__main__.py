import sys

from ris_semcom.cli import main

sys.exit(main())
