# Pakiety źródłowe projektu slopeflow
