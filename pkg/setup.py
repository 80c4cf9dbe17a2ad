from setuptools import setup, find_packages


setup(
   name='cva_hydro',
   version='0.1.0',
   description='Python workbench for the alignment-model hydrodynamic limit: particles, coefficients and waves',
   packages=find_packages(exclude=['tests', 'demo']),
   install_requires=['numpy>=1.22', 'scipy>=1.8.0', 'pandas>=1.5', 'PyYAML>=6.0', 'h5py>=3.7.0', 'tqdm',
                     'psutil', 'pymp-pypi>=0.5.0'],  #external packages as dependencies
   extras_require={'test': ['pytest']},
   entry_points={'console_scripts': ['cva-workbench=cvahydro.cli:main']},
)
