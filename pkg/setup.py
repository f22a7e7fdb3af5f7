# Licensed under a 3-clause BSD style license - see LICENSE.rst
from setuptools import setup

entry_points = {"console_scripts": ["sbl=sbl.scripts.sbl_main:main"]}

setup(
    name="sbl",
    description="Separators, bandwidth and spanning embeddings of bounded-degree graphs",
    packages=["sbl", "sbl.scripts", "sbl.embedding", "sbl.tests"],
    python_requires=">=3.10",
    install_requires=[
        "ska_helpers",
        "numpy",
        "scipy",
        "networkx>=3.0",
        "astropy",
    ],
    extras_require={"test": ["pytest"]},
    license="New BSD/3-clause BSD License",
    entry_points=entry_points,
    zip_safe=False,
    use_scm_version=True,
    setup_requires=["setuptools_scm", "setuptools_scm_git_archive"],
)
