# Jądro numeryczne: przepływ wód gruntowych nad nachylonym dnem
