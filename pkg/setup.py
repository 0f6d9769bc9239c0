from setuptools import setup

# Get requirements
requirements = [line.strip() for line in open("requirements.txt").readlines()]

setup(
    name="MVMWM",
    version="0.1.0",
    packages=[
        "mvmwm",
        "mvmwm.settings",
        "agent",
        "agent.baselines",
        "agent.management",
        "agent.management.commands",
        "agent.mvmae",
        "utils",
        "utils.runconfig",
        "utils.toyenv",
        "utils.training",
    ],
    scripts=["bin/mvmwm.py"],
    license="LICENSE.txt",
    description="Multi-view masked world models for visual control on a "
                "toy manipulation environment",
    long_description=open("README.md").read(),
    install_requires=requirements,
)
