import sys

from bdf3.main import main

sys.exit(main())
