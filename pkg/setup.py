# setup.py file

from setuptools import setup, find_packages


setup(
	name='alpha_trading',
	version='0.0.1',
	packages=find_packages(exclude=['tests']),
	package_data={
		'alpha_trading': ['default_config.json'],
	},
	install_requires=[
		'numpy',
		'pandas',
		'numba',
		'polars',
		'psutil',
		'scipy',
		'tqdm'
	],
	extras_require={
		'test': ['pytest'],
	},
	entry_points={
		'console_scripts': [
			'run_alpha_trading=alpha_trading.run_alpha_trading:main',
		],
	}
)
