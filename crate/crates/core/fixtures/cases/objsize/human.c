unsigned int json_object_size(const json_t *json)
{
    json_object_t *object;
    if(!json_is_object(json))
        return -1;

    object = json_to_object(json);
    return object->hashtable.size;
}
