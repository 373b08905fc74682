import sys

from slipipm.run_cli import main

sys.exit(main())
