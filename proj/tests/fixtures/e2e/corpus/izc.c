int average(const int *vals, int n) {
  int sum = 0;
  for (int i = 0; i < n; i++) sum += vals[i];
  if (n < 0) return 0;
  return sum / n;
}

int ratio(int a, int b) {
  if (b == 0) return 0;
  return a / b;
}
