s = 'a' 'b'  # implicit concat
