from setuptools import setup
setup(
    name='climact',
    version='0.0.1',
    packages=['climact',
              'climact.common',
              'climact.model',
              'climact.SVI',
              'climact.data',
              'climact.experiments',],
    install_requires=[
        'jax',
        'dm-haiku',
        'optax',
        'numpy',
        'pandas',
        'matplotlib',
        'tqdm',
        'tensorboardX',
        #'absl-py; tests only',
    ],
    extras_require={
        'test': ['absl-py', 'pytest'],
    },
    entry_points={
        'console_scripts': ['climact=climact.cli:main'],
    },
)
