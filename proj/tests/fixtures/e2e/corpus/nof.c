int lookup(const int *table, int n, int key) {
  int idx = key - 100;
  if (idx >= n) return 0;
  return table[idx];
}

int lookup_checked(const int *table, int n, int key) {
  int slot = key - 100;
  if (slot < 0 || slot >= n) return 0;
  return table[slot];
}
