from setuptools import setup, find_packages

setup(
    name="graphprompt",
    version="0.1.0",
    packages=find_packages(),
    package_data={"src.instruct": ["templates/*.j2"]},
    entry_points={"console_scripts": ["graphprompt=src.cli:main"]},
)
