"""
JS Falling Sphere - Fluides Johnson-Segalman et chute de sphère

Courbe d'écoulement non monotone, bandes de cisaillement en canal plan et
simulation éléments finis axisymétrique d'une sphère tombant dans un cylindre.
"""

__version__ = "1.0.0"
