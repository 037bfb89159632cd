import re
from codecs import open
from os import path

from setuptools import find_packages, setup

PACKAGE_NAME = "nsac"
HERE = path.abspath(path.dirname(__file__))

with open("README.md", "r", encoding="UTF-8") as f:
    README = f.read()
with open(path.join(HERE, PACKAGE_NAME, "const.py"), encoding="utf-8") as fp:
    VERSION = re.search('__version__ = "([^"]+)"', fp.read()).group(1)

extras = {
    "lint": ["black", "flake8", "isort"],
    "readthedocs": ["sphinx", "karma-sphinx-theme"],
    "test": ["pytest", "hypothesis"],
}
extras["lint"] += extras["readthedocs"]
extras["dev"] = extras["lint"] + extras["test"]

setup(
    name="nsac-phasefield",
    version=VERSION,
    author="nsac developers",
    description="Non-isothermal Navier-Stokes/Allen-Cahn phase-field simulator.",
    extras_require=extras,
    install_requires=["numpy>=1.22", "scipy>=1.12"],
    license="MIT License",
    long_description=README,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests", "tests.*"]),
    entry_points={"console_scripts": ["nsac = nsac.cli:main"]},
    python_requires=">=3.9",
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Natural Language :: English",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Topic :: Scientific/Engineering :: Physics",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
