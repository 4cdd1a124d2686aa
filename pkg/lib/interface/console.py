import sys

from tqdm import tqdm

# informational messages; warnings and errors always print
VERBOSE = True


def set_verbose(flag: bool):
    global VERBOSE
    VERBOSE = bool(flag)


def log(tag: str, message: str):
    if VERBOSE:
        tqdm.write(f"[{tag}] {message}", file=sys.stderr)


def warn(message: str):
    tqdm.write(f"[WARNING] {message}", file=sys.stderr)


def error(message: str):
    tqdm.write(f"[ERROR] {message}", file=sys.stderr)


def progress(iterable, desc: str, total=None, leave=False):
    """tqdm bar on stderr, hidden in quiet mode."""
    return tqdm(iterable, desc=desc, total=total, leave=leave, disable=not VERBOSE, file=sys.stderr)
