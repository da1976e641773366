#!/usr/bin/env python3
"""
Setup script for frameverify - frame-based evidence retrieval and claim verification
"""

from setuptools import setup, find_packages


# Read the README file
def read_readme():
    try:
        with open("README.md", "r", encoding="utf-8") as fh:
            return fh.read()
    except FileNotFoundError:
        return "Frame-based evidence retrieval and neural claim verification"


# Define requirements directly
def get_requirements():
    return [
        "numpy>=1.22",
        "scipy>=1.8",
        "scikit-learn>=1.1",
        "toml>=0.10.2",
        "pydantic>=2.0.0",
    ]


setup(
    name="frameverify",
    version="0.1.0",
    description="Frame-based evidence retrieval and neural claim verification with FEVER-style scoring",
    long_description=read_readme(),
    long_description_content_type="text/markdown",
    packages=find_packages(include=["frameverify*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
    ],
    python_requires=">=3.9",
    install_requires=get_requirements(),
    extras_require={"dev": ["pytest>=7.0"]},
    entry_points={
        "console_scripts": [
            "frameverify=frameverify.main:main",
        ],
    },
    include_package_data=True,
    package_data={"frameverify": ["config.toml"]},
    zip_safe=False,
)
