import sys

from src.jiif.cli import main

sys.exit(main())
