#include <stdlib.h>
int *make(unsigned int n, unsigned int w) {
  if (w != 0 && n > 4096 / w) return NULL;
  unsigned int sz = n * w;
  return malloc(sz);
}
