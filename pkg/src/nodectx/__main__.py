import sys

from nodectx.cli import main

sys.exit(main())
