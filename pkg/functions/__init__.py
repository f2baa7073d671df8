# functions/__init__.py
