from setuptools import find_packages, setup  # type: ignore

install_requires = [
    "numpy>=1.26",
    "pydantic>=2",
    "scipy>=1.11",
]

extras_require_test = [
    "flake8",
    "black",
    "pytest-cov",
    "pytest",
]

extras_require_dev = [
    *extras_require_test,
    "isort",
    "mypy",
    "pre-commit",
    "pre-commit-hooks",
    "pyright",
    "scipy-stubs",
]

extras_require = {
    "test": extras_require_test,
    "dev": extras_require_dev,
}

setup(
    name="udw-transparency",
    version="0.1.0",
    python_requires=">=3.12",
    author="Development Seed",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=install_requires,
    extras_require=extras_require,
    entry_points={
        "console_scripts": [
            "udw-transparency = udw_transparency.cli.index:main",
        ],
    },
    include_package_data=True,
)
