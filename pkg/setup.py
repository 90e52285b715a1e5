# setup.py
# Installs the global `csp-sched` CLI command.
#
# Usage:
#   pip install -e .          (from repo root — editable install, the supported way:
#                             supported_algorithms.json is read from CspSched/)
#
# After install, `csp-sched solve inst.json --algorithm greedy` works from anywhere.

from setuptools import setup, find_packages

setup(
    name='csp-sched',
    version='0.1.0',
    description='csp-sched — scheduling complex-valued power demands under apparent-power capacities',
    license='MIT',
    packages=find_packages(where='CspSched'),
    package_dir={'': 'CspSched'},
    py_modules=[
        'cli',
        'core_model',
        'errors',
        'file_manager',
        'oracle',
        'orchestrator',
        'parsers',
        'preconditions',
    ],
    python_requires='>=3.10',
    install_requires=[
        'numpy',
        'scipy',
        'python-dotenv',
        'tqdm',
    ],
    extras_require={
        'test': ['pytest'],
    },
    entry_points={
        'console_scripts': [
            # `csp-sched` command maps to cli.py:main()
            'csp-sched = cli:main',
        ],
    },
)
