import os

from setuptools import find_packages, setup

readme = os.path.join(os.path.dirname(__file__), 'README.md')

with open(readme) as fh:
    long_description = fh.read()

setup(
    name="ssnsm-aft",
    version="0.1.0",
    description="AFT regression with a semiparametric skew-normal scale mixture error",
    long_description=long_description,
    long_description_content_type="text/markdown",
    python_requires=">=3.10",
    install_requires=["numpy>=1.23", "scipy>=1.10", "pandas>=1.5", "PyYAML>=6.0"],
    extras_require={"test": ["pytest>=7.0", "jsonschema>=4.0"]},
    packages=find_packages(),
    package_data={"ssnsm_aft": ["schema/*.json"]},
    include_package_data=True,
    zip_safe=False,
    entry_points={"console_scripts": ["ssnsm-aft=ssnsm_aft.cli:main"]},
    keywords=["survival-analysis", "accelerated-failure-time", "npmle", "skew-normal"],
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering :: Mathematics",
    ],
)
