import sys

from gpuiosim.cli import main

sys.exit(main())
