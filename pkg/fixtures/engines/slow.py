"""Moteur factice: dépasse le délai."""
import time

time.sleep(10)
