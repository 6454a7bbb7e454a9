import sys

from . import shim_main

sys.exit(shim_main())
