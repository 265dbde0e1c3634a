from setuptools import find_packages, setup

with open("requirements.txt", encoding="utf-8") as f:
    requirements = [
        line.strip()
        for line in f
        if line.strip() and not line.startswith("#") and not line.startswith(("pytest", "hypothesis"))
    ]

setup(
    name="dpmil-synthetic",
    version="0.1.0",
    description="Weakly-supervised slide classification pipeline (co-teaching, LOF, MIL, fusion) on synthetic bags",
    packages=find_packages(include=["src", "src.*"]),
    python_requires=">=3.9",
    install_requires=requirements,
    extras_require={"test": ["pytest==7.4.3", "pytest-cov==4.1.0", "hypothesis==6.92.1"]},
    entry_points={"console_scripts": ["dpmil = src.main:main"]},
)
