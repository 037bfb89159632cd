#!/usr/bin/env python3
"""Format, lint, build the docs and run the tests before pushing.

``python pre_push.py`` runs the fast suite, ``python pre_push.py --slow`` adds the
full-resolution benchmarks, ``--no-tests`` stops after the static checks.
"""

import argparse
import sys
from os import path
from shutil import rmtree
from subprocess import CalledProcessError, check_call
from tempfile import mkdtemp

current_directory = path.abspath(path.join(__file__, ".."))
SOURCES = ["nsac", "tests", "docs/conf.py", "setup.py", "pre_push.py"]


def do_process(args, shell=False):
    """Run program provided by args.

    Return True on success, print the failed command and return False on non-zero exit.
    Exit if the command is not found.
    """
    print(f"Running: {' '.join(args)}")
    try:
        check_call(args, shell=shell, cwd=current_directory)
    except CalledProcessError:
        print(f"\nFailed: {' '.join(args)}")
        return False
    except Exception as exc:
        sys.stderr.write(f"{str(exc)}\n")
        sys.exit(1)
    return True


def run_static():
    """Formatters, flake8 and a warning-free sphinx build."""
    success = True
    success &= do_process(["black", *SOURCES])
    success &= do_process(["isort", *SOURCES])
    success &= do_process(
        ["flake8", "--max-line-length=100", "--extend-ignore=E203,W503", *SOURCES]
    )

    tmp_dir = mkdtemp()
    try:
        success &= do_process(["sphinx-build", "-W", "--keep-going", "docs", tmp_dir])
    finally:
        rmtree(tmp_dir)

    return success


def run_tests(slow=False):
    marker = [] if slow else ["-m", "not slow"]
    return do_process([sys.executable, "-m", "pytest", *marker, "tests"])


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--slow", action="store_true", help="include the slow benchmark tests")
    parser.add_argument("--no-tests", action="store_true", help="only run the static checks")
    args = parser.parse_args(argv)

    success = True
    try:
        success &= run_static()
        if not args.no_tests:
            success &= run_tests(args.slow)
    except KeyboardInterrupt:
        return 1
    return int(not success)


if __name__ == "__main__":
    exit_code = main()
    print("\npre_push.py: Success!" if not exit_code else "\npre_push.py: Fail")
    sys.exit(exit_code)
