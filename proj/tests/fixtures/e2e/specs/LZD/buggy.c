int step(int x) {
  int d = 0;
  if (x > 5) d = 5;
  return x / d;
}
