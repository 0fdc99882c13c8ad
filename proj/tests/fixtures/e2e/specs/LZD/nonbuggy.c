int step(int x) {
  int d = 1;
  if (x > 5) d = 5;
  return x / d;
}
