# Tests package for lie-entropy
