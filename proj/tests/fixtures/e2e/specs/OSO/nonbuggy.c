int get(const char *p, int len) {
  char buf[8];
  for (int i = 0; i < 8; i++) buf[i] = p[i];
  if (len >= 8) return -1;
  return buf[len];
}
