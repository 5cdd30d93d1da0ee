import os


def get_version(version_file=None):
    if version_file is None:
        version_file = os.path.join(os.path.dirname(__file__), '..', 'VERSION')

    # Try to read from VERSION file
    try:
        if os.path.isfile(version_file):
            with open(version_file, 'r') as f:
                version = f.read().strip()
                version = version.lstrip('v')  # Remove 'v' prefix if present
                if version:
                    return version
    except OSError:
        pass

    # Fallback to static version
    return "0.1.0"

__version__ = get_version()
