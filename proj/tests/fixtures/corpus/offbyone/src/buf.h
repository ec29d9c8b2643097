#ifndef BUF_H
#define BUF_H

#include <stddef.h>

#define NAME_MAX_LEN 16

struct name_buf {
    char *data;
    size_t cap;
};

extern size_t g_count;

int name_buf_init(struct name_buf *nb);
void name_buf_free(struct name_buf *nb);
int copy_name(struct name_buf *nb, const char *name);
size_t name_count(void);

#endif
