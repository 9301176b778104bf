"""
stcausal
Spatiotemporal causal pathway discovery for air-quality sensor networks
"""
import sys

from setuptools import find_packages, setup

short_description = __doc__.split("\n")

# from https://github.com/pytest-dev/pytest-runner#conditional-requirement
needs_pytest = {"pytest", "test", "ptr"}.intersection(sys.argv)
pytest_runner = ["pytest-runner"] if needs_pytest else []

try:
    with open("README.md", "r") as handle:
        long_description = handle.read()
except:
    long_description = "\n".join(short_description[2:])


setup(
    name="stcausal",
    author="stcausal developers",
    description=short_description[1],
    long_description=long_description,
    long_description_content_type="text/markdown",
    version="0.1.0",
    license="MIT",
    packages=find_packages(include=["stcausal", "stcausal.*"]),
    include_package_data=True,
    package_data={"stcausal": ["data/*.csv", "data/*.json", "data/*.cfg"]},
    setup_requires=[] + pytest_runner,
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "scikit-learn",
        "statsmodels",
        "pydantic>=1.8,<2",
        "pyyaml",
        "tqdm",
        "cachetools",
        "typing-extensions",
    ],
    extras_require={"test": ["pytest", "pytest-cov"]},
    entry_points={"console_scripts": ["stcausal=stcausal.cli:main"]},
    python_requires=">=3.9",
)
