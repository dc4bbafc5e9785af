# case package