"""python -m turntaking"""

import sys

from turntaking.cli.handler import main

sys.exit(main())
