int at(const int *a, int n, int k) {
  int i = k - 1;
  if (i >= n) return 0;
  return a[i];
}
