# Rawband package initialization 