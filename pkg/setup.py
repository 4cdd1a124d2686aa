from setuptools import find_packages, setup

with open("requirements.txt", "r", encoding="utf-8") as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith("pytest")]

setup(
    name="flowcurv",
    version="0.1.0",
    description="Flow curvature manifolds of 3D polynomial flows",
    packages=find_packages(include=["lib", "lib.*"]),
    data_files=[("schema", ["schema/classify_report.schema.json"])],
    install_requires=requirements,
    python_requires=">=3.9",
    entry_points={"console_scripts": ["flowcurv=lib.interface.cli:main"]},
)
