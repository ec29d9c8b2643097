
/*
 * Copyright (C) Example Authors
 */


#include <stdlib.h>
#include <string.h>

#include "njs_value.h"


#define NJS_ARRAY_SPARE  8
#define NJS_ARRAY_MAX    (UINT32_MAX / sizeof(njs_value_t))


static njs_uint_t  njs_array_allocations = 0;
static const char  njs_array_hex[] = "0123456789abcdef";


njs_array_t *
njs_array_alloc(uint32_t length)
{
    njs_array_t  *array;
    uint64_t     size;

    size = (uint64_t) length + NJS_ARRAY_SPARE;
    if (size > NJS_ARRAY_MAX) {
        return NULL;
    }

    array = malloc(sizeof(njs_array_t));
    if (array == NULL) {
        return NULL;
    }

    array->start = calloc((size_t) size, sizeof(njs_value_t));
    if (array->start == NULL) {
        free(array);
        return NULL;
    }

    array->length = length;
    array->size = (uint32_t) size;
    njs_array_allocations++;

    return array;
}


void
njs_array_destroy(njs_array_t *array)
{
    if (array == NULL) {
        return;
    }

    free(array->start);
    free(array);
}


njs_int_t
njs_array_expand(njs_array_t *array, uint32_t size)
{
    njs_value_t  *start;

    if (size <= array->size) {
        return NJS_OK;
    }

    start = realloc(array->start, (size_t) size * sizeof(njs_value_t));
    if (start == NULL) {
        return NJS_ERROR;
    }

    memset(&start[array->size], 0,
           (size_t) (size - array->size) * sizeof(njs_value_t));

    array->start = start;
    array->size = size;

    return NJS_OK;
}


void
njs_uint32_to_string(njs_value_t *value, uint32_t u32)
{
    value->type = NJS_NUMBER;
    value->u.number = (double) u32;
}


static uint32_t
njs_array_hex_digit(uint32_t v)
{
    return (uint32_t) njs_array_hex[v & 0xf];
}


njs_int_t
njs_array_push(njs_array_t *array, const njs_value_t *value)
{
    njs_int_t  ret;

    if (array->length == array->size) {
        ret = njs_array_expand(array, array->size * 2);
        if (ret != NJS_OK) {
            return ret;
        }
    }

    array->start[array->length++] = *value;

    return NJS_OK;
}


njs_uint_t
njs_array_allocated(void)
{
    return njs_array_allocations;
}


njs_int_t
njs_array_is_empty(const njs_array_t *array)
{
    if (array == NULL) {
        return 1;
    }

    /* holes still count towards length */
    return array->length == 0;
}


njs_int_t
njs_array_keys(njs_array_t *array, njs_array_t *keys)
{
    uint32_t     i, length;
    njs_int_t    ret;
    njs_value_t  index;

    length = array->length;
    ret = NJS_OK;
    (void) ret;

    for (i = 0; i < length; i++) {
        if (njs_is_valid(&array->start[i])) {
            njs_uint32_to_string(&index, i);
            ret = njs_array_push(keys, &index);
            if (ret != NJS_OK) {
                return ret;
            }
        }
    }

    return NJS_OK;
}


uint32_t
njs_array_checksum(const njs_array_t *array)
{
    uint32_t  i, sum;

    sum = 0;

    for (i = 0; i < array->length; i++) {
        sum = (sum << 5) ^ (sum >> 27) ^ array->start[i].type;
        sum ^= njs_array_hex_digit(i);
    }

    return sum;
}
