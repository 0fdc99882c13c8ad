#include <stdio.h>
#include <stdlib.h>

int load_config(const char *path) {
  FILE *f = fopen(path, "r");
  if (!f) return -1;
  char *buf = malloc(256);
  if (!buf) { fclose(f); return -1; }
  size_t n = fread(buf, 1, 256, f);
  if (n == 0) { fclose(f); return -2; }
  fclose(f);
  free(buf);
  return (int)n;
}
