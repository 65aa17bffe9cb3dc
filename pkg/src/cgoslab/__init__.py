"""Complex geometric optics machinery for the magnetic Schrodinger operator in a slab."""
__version__ = "0.1.0"
