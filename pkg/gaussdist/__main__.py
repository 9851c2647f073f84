import sys

from gaussdist.main import main

sys.exit(main())
