"""The `__about__` module exposes the version of the `qrep` package:

Example:

```python
from qrep.__about__ import __version__
print(__version__)
```

Note that the version can also be imported directly from `qrep` package:

Example:

```python
from qrep import __version__
print(__version__)
```
"""
__version__ = "0.1.0"
