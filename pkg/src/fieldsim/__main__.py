import sys

from fieldsim.cli import main

sys.exit(main())
