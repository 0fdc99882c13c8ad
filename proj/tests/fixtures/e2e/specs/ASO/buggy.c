#include <stdlib.h>
int *make(unsigned int n, unsigned int w) {
  unsigned int sz = n * w;
  return malloc(sz);
}
