from setuptools import setup

version = '0.3.0'

with open('requirements.txt') as fd:
    requirements = [line.strip() for line in fd if line.strip()]

testing_requirements = [
    'pytest',
    'mock',
    'faker',
    'pytest-cov',
    'python-coveralls',
]

linting_requirements = [
    'flake8',
    'pylint',
    'bandit',
]

with open('README.md') as fd:
    long_description = fd.read()

if 'a' in version:
    dev_status = '3 - Alpha'
elif 'b' in version:
    dev_status = '4 - Beta'
else:
    dev_status = '5 - Production/Stable'

setup_args = {
    'name': 'cadsdf',
    'version': version,
    'description': 'cadsdf reconstructs CAD-like surfaces from unoriented point clouds '
                   'with a developability-regularised neural signed distance field.',
    'long_description': long_description,
    'long_description_content_type': 'text/markdown',
    'package_dir': {'cadsdf': 'cadsdf'},
    'packages': [
        'cadsdf',
        'cadsdf.api',
        'cadsdf.formats',
        'cadsdf.cli',
    ],
    'data_files': [('', ['requirements.txt'])],
    'install_requires': requirements,
    'tests_require': testing_requirements,
    'extras_require': {
        'testing': testing_requirements,
        'linting': linting_requirements,
    },
    'entry_points': {
        'console_scripts': [
            'cadsdf = cadsdf.cli.main:main',
        ],
    },
    'python_requires': '>=3.8',
    'keywords': ['SDF', 'Surface Reconstruction', 'Point Cloud', 'Gaussian Curvature', 'CAD'],
    'classifiers': [
        'Development Status :: {0}'.format(dev_status),
        'Intended Audience :: Science/Research',
        'Natural Language :: English',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'License :: OSI Approved :: MIT License',
        'Operating System :: MacOS',
        'Operating System :: POSIX :: Linux',
        'Operating System :: Microsoft :: Windows',
        'Topic :: Scientific/Engineering :: Mathematics',
        'Programming Language :: Python :: Implementation :: CPython',
    ],
}

setup(**setup_args)
