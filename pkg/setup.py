from setuptools import setup, find_packages

setup(
    name="crowdcal",
    version="0.1.0",
    packages=find_packages(include=["crowdcal", "crowdcal.*"]),
    description="Gradient-based calibration of Social Force crowd simulations",
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=2.0.0",
        "scipy>=1.10.0",
        "python-dotenv>=1.0.0",
        "tqdm>=4.65.0",
        "click>=8.1.0",
    ],
    entry_points={"console_scripts": ["crowdcal=crowdcal.cli:main"]},
)
