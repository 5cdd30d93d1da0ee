import sys

from .cli import main

if __name__ == "__main__":
    try:
        sys.exit(main())
    except KeyboardInterrupt:
        # Gracefully handle Ctrl-C without a traceback
        sys.stderr.write("Interrupted.\n")
        sys.exit(130)
