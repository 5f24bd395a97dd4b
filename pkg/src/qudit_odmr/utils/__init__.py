# qudit_odmr.utils package
