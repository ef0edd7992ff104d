# Besovnet package
