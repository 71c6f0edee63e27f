from setuptools import setup, find_packages

with open("requirements.txt") as f:
    requirements = f.read().splitlines()
    # Filter out empty lines and comments
    requirements = [req for req in requirements if req and not req.startswith('#')]

setup(
    name="mvpred",
    version="0.1.0",
    packages=find_packages(exclude=["scripts"]),
    package_data={"mvpred": ["templates/*.j2"]},
    install_requires=requirements,
    python_requires=">=3.10",
    entry_points={
        "console_scripts": ["mvpred=mvpred.cli:main"],
    },
)
