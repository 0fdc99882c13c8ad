int scale(int value) {
  int divisor = 0;
  if (value > 100) divisor = 10;
  return value / divisor;
}

int halve(int value) {
  int d = 2;
  return value / d;
}
