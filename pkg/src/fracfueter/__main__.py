import sys

from fracfueter.cli import main

sys.exit(main())
