import sys

from grslab.main import main

sys.exit(main())
